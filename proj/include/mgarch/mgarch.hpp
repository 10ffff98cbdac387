#pragma once

/// Umbrella header for the matrix GARCH toolkit.

#include "mgarch/errors.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/panel.hpp"
#include "mgarch/theta.hpp"
#include "mgarch/filter.hpp"
#include "mgarch/likelihood.hpp"
#include "mgarch/simulate.hpp"
#include "mgarch/optimizer.hpp"
#include "mgarch/estimate.hpp"
#include "mgarch/diagnose.hpp"
#include "mgarch/factor.hpp"
#include "mgarch/evaluate.hpp"
#include "mgarch/portfolio.hpp"
#include "mgarch/io.hpp"
#include "mgarch/study.hpp"
