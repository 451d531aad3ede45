#pragma once

#include "vulnaug/container.hpp"
#include "vulnaug/error.hpp"
#include "vulnaug/operators.hpp"
#include "vulnaug/pipeline.hpp"
#include "vulnaug/probe.hpp"
#include "vulnaug/repro.hpp"
#include "vulnaug/rng.hpp"
#include "vulnaug/spanlocate.hpp"
#include "vulnaug/synth.hpp"
#include "vulnaug/types.hpp"
