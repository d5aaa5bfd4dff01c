#pragma once

#include "gdann/bench.hpp"
#include "gdann/builder.hpp"
#include "gdann/core.hpp"
#include "gdann/disk_format.hpp"
#include "gdann/io.hpp"
#include "gdann/kmeans.hpp"
#include "gdann/pq.hpp"
#include "gdann/rng.hpp"
#include "gdann/search.hpp"
#include "gdann/stores.hpp"
#include "gdann/workloads.hpp"
