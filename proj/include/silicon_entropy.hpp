#pragma once

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/calibration.hpp"
#include "silicon_entropy/dram_io.hpp"
#include "silicon_entropy/dram_model.hpp"
#include "silicon_entropy/dvft.hpp"
#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/parallel.hpp"
#include "silicon_entropy/puf.hpp"
#include "silicon_entropy/randtest/special_functions.hpp"
#include "silicon_entropy/randtest/suite.hpp"
#include "silicon_entropy/randtest/tests.hpp"
#include "silicon_entropy/rng.hpp"
#include "silicon_entropy/trng.hpp"
