#pragma once

#include "ahgeo/numerics.hpp"
#include "ahgeo/models.hpp"
#include "ahgeo/curvature.hpp"
#include "ahgeo/shooting.hpp"
#include "ahgeo/geodesic.hpp"
#include "ahgeo/compactification.hpp"
#include "ahgeo/relvol.hpp"
#include "ahgeo/collar.hpp"
#include "ahgeo/capacity.hpp"
