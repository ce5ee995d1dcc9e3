#pragma once

// Umbrella header for the passive voice-liveness pipeline: geometric
// propagation synthesis, multichannel fingerprint features, and the
// feed-forward detector with biometric metrics.

#include "arrayid/audio.hpp"
#include "arrayid/classifier.hpp"
#include "arrayid/dsp.hpp"
#include "arrayid/features.hpp"
#include "arrayid/geometry.hpp"
#include "arrayid/rng.hpp"
#include "arrayid/synth.hpp"
#include "arrayid/util.hpp"
