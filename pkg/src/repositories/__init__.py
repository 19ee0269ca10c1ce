"""Repository package initialization.""" 