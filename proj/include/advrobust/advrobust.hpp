#pragma once

#include "advrobust/errors.hpp"
#include "advrobust/geometry.hpp"
#include "advrobust/harness.hpp"
#include "advrobust/kernel.hpp"
#include "advrobust/maxmargin.hpp"
#include "advrobust/perceptron.hpp"
#include "advrobust/random.hpp"
#include "advrobust/separated_family.hpp"
