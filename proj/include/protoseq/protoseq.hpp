#pragma once

#include "protoseq/adam.hpp"
#include "protoseq/corpus.hpp"
#include "protoseq/crf.hpp"
#include "protoseq/embeddings.hpp"
#include "protoseq/encoders.hpp"
#include "protoseq/episodes.hpp"
#include "protoseq/gradcheck.hpp"
#include "protoseq/metrics.hpp"
#include "protoseq/model.hpp"
#include "protoseq/rng.hpp"
#include "protoseq/serialize.hpp"
#include "protoseq/synthetic.hpp"
#include "protoseq/tape.hpp"
#include "protoseq/tensor.hpp"
#include "protoseq/trainer.hpp"
