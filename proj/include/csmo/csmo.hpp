#pragma once

#include "csmo/bias.hpp"
#include "csmo/cache.hpp"
#include "csmo/dataset.hpp"
#include "csmo/kernel.hpp"
#include "csmo/model.hpp"
#include "csmo/problem.hpp"
#include "csmo/refqp.hpp"
#include "csmo/solver.hpp"
#include "csmo/tuning.hpp"
