#pragma once

#include "robust_ut/box.hpp"
#include "robust_ut/distortion.hpp"
#include "robust_ut/errors.hpp"
#include "robust_ut/experiment.hpp"
#include "robust_ut/lasserre.hpp"
#include "robust_ut/momentset.hpp"
#include "robust_ut/poly.hpp"
#include "robust_ut/robustut.hpp"
#include "robust_ut/sdp.hpp"
