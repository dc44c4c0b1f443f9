#pragma once

#include "speechcue/baseline.hpp"
#include "speechcue/corpus.hpp"
#include "speechcue/describe.hpp"
#include "speechcue/dsp.hpp"
#include "speechcue/error.hpp"
#include "speechcue/inference.hpp"
#include "speechcue/metrics.hpp"
#include "speechcue/prompt.hpp"
#include "speechcue/thresholds.hpp"
