#pragma once

#include "qclock/lab/acceptance.hpp"
#include "qclock/lab/config.hpp"
#include "qclock/lab/output.hpp"
#include "qclock/lab/scenarios.hpp"
#include "qclock/lab/sweep.hpp"
