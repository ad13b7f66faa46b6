#pragma once

#include "qclock/error.hpp"
#include "qclock/numerics.hpp"
#include "qclock/quantum_core.hpp"
#include "qclock/clock_models.hpp"
#include "qclock/extended_solver.hpp"
#include "qclock/propagators.hpp"
#include "qclock/mixed_states.hpp"
