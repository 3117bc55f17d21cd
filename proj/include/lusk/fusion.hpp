#pragma once

#include "lusk/fusion/fft.hpp"
#include "lusk/fusion/fusion.hpp"
#include "lusk/fusion/image.hpp"
#include "lusk/fusion/pipeline.hpp"
#include "lusk/fusion/ssim.hpp"
