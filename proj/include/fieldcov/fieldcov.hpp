#pragma once

#include "bootstrap.hpp"
#include "core.hpp"
#include "dcov.hpp"
#include "errors.hpp"
#include "fields.hpp"
#include "io.hpp"
#include "montecarlo.hpp"
#include "norms.hpp"
#include "rng.hpp"
#include "stations.hpp"
