#pragma once

#include "hlab/error.hpp"
#include "hlab/rng.hpp"
#include "hlab/markov_core.hpp"
#include "hlab/feynman_kac.hpp"
#include "hlab/h_transform.hpp"
#include "hlab/generator_lab.hpp"
#include "hlab/hjb_check.hpp"
#include "hlab/diffusion1d.hpp"
#include "hlab/bridge.hpp"
#include "hlab/orlicz.hpp"
#include "hlab/stats.hpp"
