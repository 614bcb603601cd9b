// SPDX-License-Identifier: Apache-2.0
//
// chanem -- deterministic tapped-delay-line channel emulator for IQ streams
//
// Umbrella header.

#ifndef CHANEM_CHANEM_HPP
#define CHANEM_CHANEM_HPP

#include "chanem/fixed_point.hpp"
#include "chanem/planner.hpp"
#include "chanem/scenario.hpp"
#include "chanem/stream_io.hpp"
#include "chanem/tdl_engine.hpp"
#include "chanem/udp_bridge.hpp"
#include "chanem/verify.hpp"

#endif  // CHANEM_CHANEM_HPP
