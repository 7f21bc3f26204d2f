#ifndef WAVELEARN_WAVELEARN_HPP
#define WAVELEARN_WAVELEARN_HPP

#include "wavelearn/autodiff.hpp"
#include "wavelearn/channel.hpp"
#include "wavelearn/common.hpp"
#include "wavelearn/config.hpp"
#include "wavelearn/constellation.hpp"
#include "wavelearn/detector.hpp"
#include "wavelearn/envelope.hpp"
#include "wavelearn/io.hpp"
#include "wavelearn/linalg.hpp"
#include "wavelearn/quadrature.hpp"
#include "wavelearn/rng.hpp"
#include "wavelearn/rrc_baseline.hpp"
#include "wavelearn/sinc_filter.hpp"
#include "wavelearn/trainer.hpp"

#endif  // WAVELEARN_WAVELEARN_HPP
