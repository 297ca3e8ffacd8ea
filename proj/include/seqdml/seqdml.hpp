#pragma once

#include "seqdml/cli.hpp"
#include "seqdml/crossfit.hpp"
#include "seqdml/csv.hpp"
#include "seqdml/dataset.hpp"
#include "seqdml/diagnostics.hpp"
#include "seqdml/effects.hpp"
#include "seqdml/errors.hpp"
#include "seqdml/forest.hpp"
#include "seqdml/lasso.hpp"
#include "seqdml/learner_options.hpp"
#include "seqdml/learners.hpp"
#include "seqdml/logistic.hpp"
#include "seqdml/rng.hpp"
#include "seqdml/scores.hpp"
#include "seqdml/simulation.hpp"
#include "seqdml/stats.hpp"
