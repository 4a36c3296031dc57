#pragma once

#include "hcs/common.hpp"
#include "hcs/experiments.hpp"
#include "hcs/geometry.hpp"
#include "hcs/grid.hpp"
#include "hcs/quadrature.hpp"
#include "hcs/quantize.hpp"
#include "hcs/states.hpp"
#include "hcs/stationary.hpp"
#include "hcs/symbols.hpp"
