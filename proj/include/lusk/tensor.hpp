#pragma once

#include "lusk/tensor/adam.hpp"
#include "lusk/tensor/checkpoint.hpp"
#include "lusk/tensor/gradcheck.hpp"
#include "lusk/tensor/ops.hpp"
#include "lusk/tensor/tensor.hpp"
