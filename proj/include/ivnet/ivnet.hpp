#ifndef IVNET_IVNET_HPP
#define IVNET_IVNET_HPP

#include "ivnet/autodiff/grad_check.hpp"
#include "ivnet/autodiff/graph.hpp"
#include "ivnet/autodiff/tensor.hpp"
#include "ivnet/baseline/logreg.hpp"
#include "ivnet/corpus/forum.hpp"
#include "ivnet/corpus/io.hpp"
#include "ivnet/corpus/preprocess.hpp"
#include "ivnet/corpus/split.hpp"
#include "ivnet/corpus/synth.hpp"
#include "ivnet/corpus/text.hpp"
#include "ivnet/corpus/thread.hpp"
#include "ivnet/corpus/vocab.hpp"
#include "ivnet/error.hpp"
#include "ivnet/eval/evaluate.hpp"
#include "ivnet/eval/metrics.hpp"
#include "ivnet/model/lstm.hpp"
#include "ivnet/model/model.hpp"
#include "ivnet/pipeline.hpp"
#include "ivnet/train/adam.hpp"
#include "ivnet/train/checkpoint.hpp"
#include "ivnet/train/embeddings.hpp"
#include "ivnet/train/trainer.hpp"
#include "ivnet/util/hash.hpp"
#include "ivnet/util/rng.hpp"

#endif
