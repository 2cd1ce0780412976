#pragma once

#include "submhe/box_set.hpp"
#include "submhe/candidates.hpp"
#include "submhe/cost.hpp"
#include "submhe/estimator.hpp"
#include "submhe/gains.hpp"
#include "submhe/harness.hpp"
#include "submhe/linalg.hpp"
#include "submhe/observer.hpp"
#include "submhe/reactor.hpp"
#include "submhe/rng.hpp"
#include "submhe/solver.hpp"
#include "submhe/system.hpp"
