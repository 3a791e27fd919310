#pragma once

// Umbrella header.

#include "halo/backend.hpp"
#include "halo/concepts.hpp"
#include "halo/config.hpp"
#include "halo/diag.hpp"
#include "halo/errors.hpp"
#include "halo/evaluation.hpp"
#include "halo/manifest.hpp"
#include "halo/mitigation.hpp"
#include "halo/pipeline.hpp"
#include "halo/prompts.hpp"
#include "halo/retrieval.hpp"
#include "halo/runtime.hpp"
#include "halo/scoring.hpp"
#include "halo/serialize.hpp"
#include "halo/tasks.hpp"
#include "halo/text.hpp"
#include "halo/validation.hpp"
