#pragma once

#include "vaoi/error.hpp"
#include "vaoi/env.hpp"
#include "vaoi/nn.hpp"
#include "vaoi/diffusion.hpp"
#include "vaoi/critics.hpp"
#include "vaoi/replay.hpp"
#include "vaoi/lagrange.hpp"
#include "vaoi/agents.hpp"
#include "vaoi/risk_metrics.hpp"
#include "vaoi/oracles.hpp"
#include "vaoi/harness/config.hpp"
#include "vaoi/harness/heuristics.hpp"
#include "vaoi/harness/checkpoint.hpp"
#include "vaoi/harness/evaluate.hpp"
#include "vaoi/harness/run.hpp"
#include "vaoi/harness/plot.hpp"
#include "vaoi/harness/sweep.hpp"
