#pragma once

#include "dhj/convergence.hpp"
#include "dhj/core.hpp"
#include "dhj/dmech.hpp"
#include "dhj/docp.hpp"
#include "dhj/galerkin.hpp"
#include "dhj/grid.hpp"
#include "dhj/hj.hpp"
#include "dhj/linhj.hpp"
#include "dhj/systems.hpp"
#include "dhj/version.hpp"
