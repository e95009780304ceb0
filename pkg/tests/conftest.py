import os

# must be in the environment before numba is imported anywhere, so that
# thread-count experiments can request up to 8 threads on any machine
os.environ.setdefault("NUMBA_NUM_THREADS", "8")
