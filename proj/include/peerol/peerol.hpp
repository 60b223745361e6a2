#pragma once

#include "peerol/aggregation.hpp"
#include "peerol/bounds.hpp"
#include "peerol/config.hpp"
#include "peerol/core.hpp"
#include "peerol/estimation.hpp"
#include "peerol/io.hpp"
#include "peerol/learner.hpp"
#include "peerol/peer_score.hpp"
#include "peerol/rng.hpp"
#include "peerol/sim.hpp"
