#pragma once

#include "lexdial/aggregate.hpp"
#include "lexdial/cartography.hpp"
#include "lexdial/cluster.hpp"
#include "lexdial/digest.hpp"
#include "lexdial/error.hpp"
#include "lexdial/geogrid.hpp"
#include "lexdial/ingest.hpp"
#include "lexdial/lexicon.hpp"
#include "lexdial/pipeline.hpp"
#include "lexdial/population.hpp"
#include "lexdial/reduce.hpp"
#include "lexdial/synthlab.hpp"
#include "lexdial/text.hpp"
