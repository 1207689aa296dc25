#pragma once

#include "rfl/errors.hpp"
#include "rfl/spectra.hpp"
#include "rfl/problem.hpp"
#include "rfl/operators.hpp"
#include "rfl/filtering.hpp"
#include "rfl/minimax.hpp"
#include "rfl/oracle.hpp"
#include "rfl/montecarlo.hpp"
