from chunkstack.utils.rng import Stream, make_rng

__all__ = ["Stream", "make_rng"]
