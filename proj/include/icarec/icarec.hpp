#pragma once

#include "icarec/adam.hpp"
#include "icarec/autodiff.hpp"
#include "icarec/baselines.hpp"
#include "icarec/checkpoint.hpp"
#include "icarec/datagen.hpp"
#include "icarec/dataset_io.hpp"
#include "icarec/error.hpp"
#include "icarec/eval.hpp"
#include "icarec/experiment.hpp"
#include "icarec/gradcheck.hpp"
#include "icarec/infometrics.hpp"
#include "icarec/io.hpp"
#include "icarec/lemma.hpp"
#include "icarec/linalg.hpp"
#include "icarec/nn.hpp"
#include "icarec/objectives.hpp"
#include "icarec/parallel.hpp"
#include "icarec/rng.hpp"
#include "icarec/svg.hpp"
#include "icarec/tensor.hpp"
#include "icarec/trainer.hpp"
