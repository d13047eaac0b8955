"""In-memory stream handed to PyGuitarPro, which closes it when done."""

import io


class Gp5Buffer(io.BytesIO):
    """BytesIO that keeps its position and contents past close()."""

    def __init__(self, data: bytes = b""):
        super().__init__(data)
        self.offset = 0
        self.payload = b""

    def close(self) -> None:
        if not self.closed:
            self.offset = self.tell()
            self.payload = self.getvalue()
        super().close()

    @property
    def position(self) -> int:
        return self.offset if self.closed else self.tell()

    @property
    def contents(self) -> bytes:
        return self.payload if self.closed else self.getvalue()
