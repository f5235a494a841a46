#pragma once

#include "divlab/adversary.hpp"
#include "divlab/autoregressive.hpp"
#include "divlab/dist.hpp"
#include "divlab/divergence.hpp"
#include "divlab/errors.hpp"
#include "divlab/gaussian.hpp"
#include "divlab/grid.hpp"
#include "divlab/nats.hpp"
#include "divlab/objectives.hpp"
#include "divlab/optimize.hpp"
#include "divlab/rng.hpp"
#include "divlab/sslab.hpp"
