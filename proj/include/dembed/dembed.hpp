#pragma once

#include "dembed/channel.hpp"
#include "dembed/codec.hpp"
#include "dembed/detection.hpp"
#include "dembed/experiment.hpp"
#include "dembed/report.hpp"
#include "dembed/rng.hpp"
#include "dembed/spectral.hpp"
#include "dembed/types.hpp"
