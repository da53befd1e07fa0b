#pragma once

// Umbrella header.

#include "soundclr/audio_io.hpp"
#include "soundclr/augmentation.hpp"
#include "soundclr/checkpoint.hpp"
#include "soundclr/config.hpp"
#include "soundclr/dataset.hpp"
#include "soundclr/dsp.hpp"
#include "soundclr/errors.hpp"
#include "soundclr/evaluation.hpp"
#include "soundclr/gradcheck.hpp"
#include "soundclr/losses.hpp"
#include "soundclr/model.hpp"
#include "soundclr/nn.hpp"
#include "soundclr/optimizer.hpp"
#include "soundclr/rng.hpp"
#include "soundclr/synth.hpp"
#include "soundclr/tensor.hpp"
#include "soundclr/trainer.hpp"
