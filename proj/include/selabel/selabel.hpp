#pragma once

#include "selabel/conformal.hpp"
#include "selabel/csv.hpp"
#include "selabel/errors.hpp"
#include "selabel/metrics.hpp"
#include "selabel/montecarlo.hpp"
#include "selabel/procedures.hpp"
#include "selabel/random.hpp"
#include "selabel/regression.hpp"
#include "selabel/report.hpp"
#include "selabel/scores.hpp"
#include "selabel/tuning.hpp"
