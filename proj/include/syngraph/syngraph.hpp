#pragma once

#include "syngraph/baseline.hpp"
#include "syngraph/error.hpp"
#include "syngraph/graph.hpp"
#include "syngraph/interpolation.hpp"
#include "syngraph/llm.hpp"
#include "syngraph/metrics.hpp"
#include "syngraph/pipeline.hpp"
#include "syngraph/prompts.hpp"
#include "syngraph/review.hpp"
#include "syngraph/sparsity.hpp"
#include "syngraph/synthesis.hpp"
