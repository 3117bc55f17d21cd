#pragma once

#include "lusk/train/train.hpp"
