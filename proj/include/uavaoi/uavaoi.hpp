#pragma once

#include "uavaoi/baselines.hpp"
#include "uavaoi/config.hpp"
#include "uavaoi/decpomdp.hpp"
#include "uavaoi/error.hpp"
#include "uavaoi/feasibility.hpp"
#include "uavaoi/geometry.hpp"
#include "uavaoi/harness.hpp"
#include "uavaoi/nn.hpp"
#include "uavaoi/physics.hpp"
#include "uavaoi/qmix.hpp"
#include "uavaoi/rng.hpp"
#include "uavaoi/state.hpp"
#include "uavaoi/world.hpp"
