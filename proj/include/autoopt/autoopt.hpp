#pragma once

#include "autoopt/errors.hpp"
#include "autoopt/expression.hpp"
#include "autoopt/model.hpp"
#include "autoopt/tape.hpp"
#include "autoopt/latex.hpp"
#include "autoopt/model_io.hpp"
#include "autoopt/script.hpp"
#include "autoopt/local_solver.hpp"
#include "autoopt/ga_ops.hpp"
#include "autoopt/completion.hpp"
#include "autoopt/lrvcm.hpp"
#include "autoopt/bobd.hpp"
#include "autoopt/test_problems.hpp"
#include "autoopt/registry.hpp"
#include "autoopt/bench.hpp"
