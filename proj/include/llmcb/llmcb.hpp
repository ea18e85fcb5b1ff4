#pragma once

#include "llmcb/core/errors.hpp"
#include "llmcb/core/rng.hpp"
#include "llmcb/core/types.hpp"

#include "llmcb/selector/corral.hpp"
#include "llmcb/selector/lambda_solver.hpp"
#include "llmcb/selector/orchestrator.hpp"
#include "llmcb/selector/schedule.hpp"
#include "llmcb/selector/smoothing.hpp"
#include "llmcb/selector/strategy.hpp"

#include "llmcb/bandit/bilinear_model.hpp"
#include "llmcb/bandit/reduce.hpp"
#include "llmcb/bandit/spanner.hpp"
#include "llmcb/bandit/spanner_greedy.hpp"

#include "llmcb/llm/cache.hpp"
#include "llmcb/llm/embedder.hpp"
#include "llmcb/llm/generator.hpp"
#include "llmcb/llm/http_backend.hpp"
#include "llmcb/llm/llm_policy.hpp"
#include "llmcb/llm/prompts.hpp"
#include "llmcb/llm/similarity.hpp"
#include "llmcb/llm/synthetic_backend.hpp"

#include "llmcb/env/batches.hpp"
#include "llmcb/env/dataset.hpp"
#include "llmcb/env/synthetic.hpp"

#include "llmcb/harness/config.hpp"
#include "llmcb/harness/metrics.hpp"
#include "llmcb/harness/runner.hpp"
