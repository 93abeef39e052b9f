#pragma once

#include "ppgsqa/accounting.hpp"
#include "ppgsqa/data_io.hpp"
#include "ppgsqa/dsp.hpp"
#include "ppgsqa/errors.hpp"
#include "ppgsqa/layers.hpp"
#include "ppgsqa/metrics.hpp"
#include "ppgsqa/model.hpp"
#include "ppgsqa/parameter_store.hpp"
#include "ppgsqa/rng.hpp"
#include "ppgsqa/tensor.hpp"
#include "ppgsqa/training.hpp"
