#pragma once

#include "dynbatch/acquisition.hpp"
#include "dynbatch/batch.hpp"
#include "dynbatch/error.hpp"
#include "dynbatch/gp.hpp"
#include "dynbatch/harness.hpp"
#include "dynbatch/lookahead.hpp"
#include "dynbatch/metrics.hpp"
#include "dynbatch/objectives.hpp"
#include "dynbatch/rng.hpp"
#include "dynbatch/study.hpp"
