#pragma once

#include <nrsw/errors.hpp>
#include <nrsw/events.hpp>
#include <nrsw/experiments.hpp>
#include <nrsw/gaussian.hpp>
#include <nrsw/kernels.hpp>
#include <nrsw/lattice.hpp>
#include <nrsw/rng.hpp>
#include <nrsw/sampler.hpp>
