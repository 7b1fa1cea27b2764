#pragma once

// Convenience include for the whole toolkit.

#include "seqseg/checkpoint.hpp"
#include "seqseg/config.hpp"
#include "seqseg/corpus.hpp"
#include "seqseg/crf.hpp"
#include "seqseg/error.hpp"
#include "seqseg/features.hpp"
#include "seqseg/metrics.hpp"
#include "seqseg/optimizer.hpp"
#include "seqseg/recurrent.hpp"
#include "seqseg/rng.hpp"
#include "seqseg/training.hpp"
