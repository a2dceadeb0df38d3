#pragma once

#include "analysis.hpp"
#include "cascade.hpp"
#include "parallel.hpp"
#include "search.hpp"
#include "stokes.hpp"
