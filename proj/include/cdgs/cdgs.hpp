#pragma once

#include <cdgs/baselines.hpp>
#include <cdgs/data.hpp>
#include <cdgs/errors.hpp>
#include <cdgs/graph.hpp>
#include <cdgs/linalg.hpp>
#include <cdgs/mmd.hpp>
#include <cdgs/propagation.hpp>
#include <cdgs/solver.hpp>
