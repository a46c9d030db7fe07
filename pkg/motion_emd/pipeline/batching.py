from typing import Iterator

import numpy as np


class BatchPaginator:
    """
    Paginator over the training indices of one epoch.
    Pages are minibatches of a seeded shuffle, visited in order.
    """

    def __init__(self, indices: np.ndarray, batch_size: int,
                 rng: np.random.Generator = None) -> None:
        """
        :param indices: dataset rows that belong to the split
        :param batch_size: members per page, the last page may be short
        :param rng: shuffles the order; None keeps the given order
        """
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        indices = np.asarray(indices, dtype=np.int64)
        self.order = rng.permutation(indices) if rng is not None else indices.copy()
        self.batch_size = batch_size

    def __iter__(self) -> Iterator[np.ndarray]:
        for page in range(1, self.total_pages() + 1):
            yield self.jump_to_page(page)

    def jump_to_page(self, page: int) -> np.ndarray:
        """
        Jumps to a specified page.
        :param page: 1-based page number
        :returns members: indices on that page
        """
        if not 1 <= page <= self.total_pages():
            raise IndexError("No page {} in {} pages".format(page, self.total_pages()))
        start = (page - 1) * self.batch_size
        return self.order[start:start + self.batch_size]

    def total_items(self) -> int:
        return int(self.order.size)

    def total_pages(self) -> int:
        return -(-self.total_items() // self.batch_size)
