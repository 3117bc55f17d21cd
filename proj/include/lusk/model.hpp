#pragma once

#include "lusk/model/config.hpp"
#include "lusk/model/model.hpp"
#include "lusk/model/network.hpp"
