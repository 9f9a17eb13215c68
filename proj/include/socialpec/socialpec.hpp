#pragma once

// Umbrella header.

#include "socialpec/common.hpp"
#include "socialpec/dataio.hpp"
#include "socialpec/encoder.hpp"
#include "socialpec/eval.hpp"
#include "socialpec/head.hpp"
#include "socialpec/manifest.hpp"
#include "socialpec/param_store.hpp"
#include "socialpec/pec.hpp"
#include "socialpec/predictor.hpp"
#include "socialpec/rng.hpp"
#include "socialpec/svg.hpp"
#include "socialpec/tape.hpp"
#include "socialpec/tensor.hpp"
#include "socialpec/train.hpp"
#include "socialpec/trajectory.hpp"
