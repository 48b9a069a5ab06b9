#pragma once

#include "inlms/dsp_core.hpp"
#include "inlms/estimators.hpp"
#include "inlms/adaptive_filters.hpp"
#include "inlms/scenarios.hpp"
#include "inlms/metrics.hpp"
#include "inlms/experiment.hpp"
