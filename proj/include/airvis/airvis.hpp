#pragma once

#include "airvis/camera.hpp"
#include "airvis/dehaze.hpp"
#include "airvis/depth.hpp"
#include "airvis/error.hpp"
#include "airvis/pixmap.hpp"
#include "airvis/synth.hpp"
#include "airvis/terrain.hpp"
#include "airvis/visibility.hpp"
