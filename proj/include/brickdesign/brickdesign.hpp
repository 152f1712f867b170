#pragma once

#include "config.hpp"
#include "core.hpp"
#include "fitting.hpp"
#include "gates.hpp"
#include "kernels.hpp"
#include "parallel.hpp"
#include "perm_dynamics.hpp"
#include "permutations.hpp"
#include "replica_channel.hpp"
#include "rng.hpp"
#include "runner.hpp"
#include "sampled_moments.hpp"
#include "series.hpp"
#include "spectral.hpp"
#include "statevec.hpp"
#include "subspace.hpp"
#include "theory.hpp"
