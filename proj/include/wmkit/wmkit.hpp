#pragma once

#include "wmkit/error.hpp"
#include "wmkit/eval.hpp"
#include "wmkit/io.hpp"
#include "wmkit/losses.hpp"
#include "wmkit/metrics.hpp"
#include "wmkit/quantizer.hpp"
#include "wmkit/random.hpp"
#include "wmkit/rollout.hpp"
#include "wmkit/synth.hpp"
#include "wmkit/trajectory.hpp"
