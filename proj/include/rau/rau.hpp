#pragma once

#include "rau/checkpoint.hpp"
#include "rau/config.hpp"
#include "rau/data.hpp"
#include "rau/encoders.hpp"
#include "rau/error.hpp"
#include "rau/eval.hpp"
#include "rau/geometry.hpp"
#include "rau/hypersphere.hpp"
#include "rau/losses.hpp"
#include "rau/matrix.hpp"
#include "rau/optim.hpp"
#include "rau/parallel.hpp"
#include "rau/rng.hpp"
#include "rau/sweep.hpp"
#include "rau/trainer.hpp"
