#pragma once

#include "epsflow/analysis.hpp"
#include "epsflow/curve.hpp"
#include "epsflow/differential.hpp"
#include "epsflow/energy.hpp"
#include "epsflow/errors.hpp"
#include "epsflow/flow.hpp"
#include "epsflow/oracle.hpp"
#include "epsflow/spectral.hpp"
