#pragma once

// Umbrella header: multi-teacher Bayesian knowledge distillation library.

#include "mtbkd/config.hpp"
#include "mtbkd/dataset.hpp"
#include "mtbkd/errors.hpp"
#include "mtbkd/harness.hpp"
#include "mtbkd/hash.hpp"
#include "mtbkd/linalg.hpp"
#include "mtbkd/nn.hpp"
#include "mtbkd/posterior.hpp"
#include "mtbkd/prior.hpp"
#include "mtbkd/rng.hpp"
#include "mtbkd/sgld.hpp"
#include "mtbkd/synthetic.hpp"
#include "mtbkd/teacher.hpp"
#include "mtbkd/threading.hpp"
#include "mtbkd/train.hpp"
#include "mtbkd/uq.hpp"
