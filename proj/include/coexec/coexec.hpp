#pragma once

#include "coexec/chart.hpp"
#include "coexec/config.hpp"
#include "coexec/core.hpp"
#include "coexec/engine.hpp"
#include "coexec/error.hpp"
#include "coexec/experiment.hpp"
#include "coexec/metrics.hpp"
#include "coexec/schedulers.hpp"
#include "coexec/trace_io.hpp"
#include "coexec/workloads.hpp"
