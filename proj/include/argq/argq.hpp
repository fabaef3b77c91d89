#pragma once

#include "argq/baseline.hpp"
#include "argq/common.hpp"
#include "argq/config.hpp"
#include "argq/contrastive.hpp"
#include "argq/corpus.hpp"
#include "argq/delimited.hpp"
#include "argq/encoder.hpp"
#include "argq/evaluation.hpp"
#include "argq/hashing.hpp"
#include "argq/mtl.hpp"
#include "argq/optim.hpp"
#include "argq/predictions.hpp"
#include "argq/pretrained.hpp"
#include "argq/prompting.hpp"
#include "argq/random.hpp"
#include "argq/stemmer.hpp"
#include "argq/synthetic.hpp"
