#pragma once

#include "permsphere/assignment.hpp"
#include "permsphere/bessel.hpp"
#include "permsphere/embedding.hpp"
#include "permsphere/experiments.hpp"
#include "permsphere/filter.hpp"
#include "permsphere/permutation.hpp"
#include "permsphere/rng.hpp"
#include "permsphere/trajectories.hpp"
#include "permsphere/vmf.hpp"
