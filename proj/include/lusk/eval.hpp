#pragma once

#include "lusk/eval/eval.hpp"
