#pragma once

#include "akash/bytes.hpp"
#include "akash/errors.hpp"
#include "akash/eval.hpp"
#include "akash/features.hpp"
#include "akash/kernel_net.hpp"
#include "akash/model.hpp"
#include "akash/perturb.hpp"
#include "akash/sahash.hpp"
#include "akash/serialize.hpp"
#include "akash/similarity.hpp"
#include "akash/trainer.hpp"
