#pragma once

#include "dnl/errors.hpp"
#include "dnl/exponents.hpp"
#include "dnl/grid.hpp"
#include "dnl/kernel.hpp"
#include "dnl/nonlocal_op.hpp"
#include "dnl/resolvent.hpp"
#include "dnl/selfsim.hpp"
#include "dnl/barrier.hpp"
#include "dnl/verify.hpp"
#include "dnl/io.hpp"
#include "dnl/harness.hpp"
