import os
import logging

from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
PDS_THREADS = int(os.getenv('PDS_THREADS', str(os.cpu_count() or 1)))
PDS_SEED = int(os.getenv('PDS_SEED', '0'))
PDS_MASK_FLOOR = float(os.getenv('PDS_MASK_FLOOR', '1e-6'))
PDS_SUBSAMPLE = int(os.getenv('PDS_SUBSAMPLE', '200'))
PDS_NOISE_BUFFER_ELEMENTS = int(os.getenv('PDS_NOISE_BUFFER_ELEMENTS', str(2 ** 20)))
PDS_CHAIN_BLOCK = int(os.getenv('PDS_CHAIN_BLOCK', '256'))
PDS_BENCH_ORACLE_LATENCY = float(os.getenv('PDS_BENCH_ORACLE_LATENCY', '0.25'))
PDS_PERMUTATIONS = int(os.getenv('PDS_PERMUTATIONS', '200'))

MASK_MAGIC = b'PDSM'
TENSOR_MAGIC = b'PDST'
FORMAT_VERSION = 1


def worker_count() -> int:
    return max(1, PDS_THREADS)


def setup_logging(level: str = None):
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    logging.getLogger('numexpr').setLevel(logging.WARNING)
