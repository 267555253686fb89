#pragma once

#include "nhms/analytic.hpp"
#include "nhms/config.hpp"
#include "nhms/error.hpp"
#include "nhms/experiments.hpp"
#include "nhms/io.hpp"
#include "nhms/model.hpp"
#include "nhms/polarization.hpp"
#include "nhms/solver.hpp"
#include "nhms/validation.hpp"
#include "nhms/version.hpp"
