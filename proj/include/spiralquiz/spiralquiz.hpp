#pragma once

#include "spiralquiz/assess.hpp"
#include "spiralquiz/codec.hpp"
#include "spiralquiz/convolve.hpp"
#include "spiralquiz/font.hpp"
#include "spiralquiz/image.hpp"
#include "spiralquiz/layout.hpp"
#include "spiralquiz/pattern.hpp"
#include "spiralquiz/pipeline.hpp"
#include "spiralquiz/png_io.hpp"
#include "spiralquiz/rectify.hpp"
#include "spiralquiz/symmetry.hpp"
