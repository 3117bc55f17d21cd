#pragma once

#include "lusk/cli/commands.hpp"
#include "lusk/cli/run_config.hpp"
