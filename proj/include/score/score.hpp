#pragma once

// Umbrella header: statistical certification of regions of attraction.

#include "score/certifier.hpp"
#include "score/config.hpp"
#include "score/dynamics.hpp"
#include "score/errors.hpp"
#include "score/evt.hpp"
#include "score/lyapunov.hpp"
#include "score/manifold_sampler.hpp"
#include "score/nelder_mead.hpp"
#include "score/oracle.hpp"
#include "score/report.hpp"
#include "score/rng.hpp"
#include "score/synthesis.hpp"
#include "score/version.hpp"
